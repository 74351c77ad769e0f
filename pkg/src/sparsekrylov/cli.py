"""Experiment runner: JSON config ingestion, solver dispatch, and artifact
emission (history CSVs, reconstructions, summary tables).

Commands:

    solve run <config.json> [--out DIR] [--seeds 0..9] [--jobs N]
    solve validate <config.json>
    solve problems list

Exit codes: 0 success, 2 config error, 3 internal error.  The output
directory may be overridden by the ``SOLVE_OUT_DIR`` environment variable
(the only environment override).
"""

import argparse
import concurrent.futures
import difflib
import json
import os
import sys

import numpy as np

from .problems import blur2d_problem, ct_problem, spectra_problem
from .regularization import RegOperator
from .solvers import ALL_METHODS, ARNOLDI_METHODS, SolverConfig, solve

PROBLEM_KINDS = ("spectra_1d", "blur_2d", "ct")

# (key, default, validator) per section; None default means "required".
_PROBLEM_KEYS = {
    "spectra_1d": {"n": 64, "nl": 0.01, "regularizer": "identity"},
    "blur_2d": {"nx": 64, "nl": 0.5, "psf_sigma": 1.5, "boundary": "reflexive",
                "density": 0.072, "regularizer": "identity"},
    "ct": {"nx": 64, "n_angles": 90, "n_detectors": None, "nl": 0.5,
           "regularizer": "identity"},
}
_SOLVER_KEYS = {
    "method": None, "label": None, "p": 1.0, "tau_smooth": None,
    "lambda_rule": "discrepancy", "lambda_value": 0.0, "tau_dp": 1.0,
    "restart_tol": 0.1, "max_basis_vectors": "problem-default", "kmax": 100,
    "stop_x_tol": 1e-8, "corrected_seed": "image", "fista_monotone": True,
}
_EMIT_KEYS = {"history_csv": True, "reconstruction_pgm": True,
              "reconstruction_raw": True, "summary_table": True}
_TOP_KEYS = ("problem", "solvers", "seeds", "output_dir", "emit")

# Basis caps applied when a solver entry leaves max_basis_vectors at the
# problem default: unlimited for the 1D problem, 30 for deblurring, 20 for CT.
_DEFAULT_CAPS = {"spectra_1d": None, "blur_2d": 30, "ct": 20}

CSV_COLUMNS = ("iter", "rel_error", "res_norm", "lambda", "subspace_dim",
               "restarted", "functional_T")


class ConfigError(Exception):
    """Invalid experiment configuration; message carries the key path."""


def _check_keys(section, allowed, path):
    for key in section:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            extra = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"{path}.{key}: unknown key{extra}")


def _want(cond, path, message):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def validate_config(raw, path="config"):
    """Validate a parsed JSON config and fill defaults.

    Returns the effective config dict.  Raises ConfigError with a
    key-path-precise message on the first problem found.
    """
    _want(isinstance(raw, dict), path, "config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, path)

    problem = raw.get("problem")
    _want(isinstance(problem, dict), f"{path}.problem", "required object")
    kind = problem.get("kind")
    _want(kind in PROBLEM_KINDS, f"{path}.problem.kind",
          f"must be one of {', '.join(PROBLEM_KINDS)}")
    allowed = dict(_PROBLEM_KEYS[kind], kind=kind)
    _check_keys(problem, allowed, f"{path}.problem")
    eff_problem = {"kind": kind}
    for key, default in _PROBLEM_KEYS[kind].items():
        value = problem.get(key, default)
        if key in ("n", "nx", "n_angles", "n_detectors", "nl", "psf_sigma",
                   "density") and value is not None:
            _want(isinstance(value, (int, float)) and not isinstance(value, bool),
                  f"{path}.problem.{key}", "must be a number")
        eff_problem[key] = value
    _want(eff_problem["nl"] >= 0, f"{path}.problem.nl", "must be nonnegative")
    _want(eff_problem["regularizer"] in ("identity", "first_difference"),
          f"{path}.problem.regularizer",
          "must be 'identity' or 'first_difference'")
    size_key = "n" if kind == "spectra_1d" else "nx"
    _want(int(eff_problem[size_key]) >= 16, f"{path}.problem.{size_key}",
          "must be >= 16")

    solvers = raw.get("solvers")
    _want(isinstance(solvers, list) and len(solvers) > 0, f"{path}.solvers",
          "must be a non-empty list of solver entries")
    eff_solvers = []
    labels = set()
    for idx, entry in enumerate(solvers):
        spath = f"{path}.solvers[{idx}]"
        _want(isinstance(entry, dict), spath, "must be an object")
        _check_keys(entry, _SOLVER_KEYS, spath)
        method = entry.get("method")
        if method not in ALL_METHODS:
            hint = difflib.get_close_matches(str(method), ALL_METHODS, n=3)
            raise ConfigError(
                f"{spath}.method: unknown method {method!r}; valid methods: "
                f"{', '.join(ALL_METHODS)}"
                + (f" (closest: {', '.join(hint)})" if hint else "")
            )
        if kind == "ct" and method in ARNOLDI_METHODS:
            raise ConfigError(
                f"{spath}.method: {method} needs a square operator and cannot "
                "run on the rectangular ct problem"
            )
        eff = {}
        for key, default in _SOLVER_KEYS.items():
            if key in ("method", "label"):
                continue
            eff[key] = entry.get(key, default)
        if eff["max_basis_vectors"] == "problem-default":
            eff["max_basis_vectors"] = _DEFAULT_CAPS[kind]
        eff["method"] = method
        eff["label"] = entry.get("label") or f"{idx:02d}_{method}"
        _want(eff["label"] not in labels, f"{spath}.label", "duplicate label")
        labels.add(eff["label"])
        _want(0.0 < eff["p"] <= 2.0, f"{spath}.p", "must lie in (0, 2]")
        _want(eff["lambda_rule"] in ("discrepancy", "optimal", "fixed"),
              f"{spath}.lambda_rule",
              "must be 'discrepancy', 'optimal' or 'fixed'")
        _want(eff["lambda_value"] >= 0.0, f"{spath}.lambda_value",
              "must be nonnegative")
        _want(eff["tau_dp"] > 0.0, f"{spath}.tau_dp", "must be positive")
        _want(eff["kmax"] >= 1, f"{spath}.kmax", "must be >= 1")
        if eff["max_basis_vectors"] is not None:
            _want(int(eff["max_basis_vectors"]) >= 1,
                  f"{spath}.max_basis_vectors", "must be >= 1 or null")
        if eff["tau_smooth"] is not None:
            _want(eff["tau_smooth"] > 0.0, f"{spath}.tau_smooth",
                  "must be positive or null")
        if method == "fista":
            _want(eff["lambda_rule"] == "fixed", f"{spath}.lambda_rule",
                  "fista needs a user-specified parameter (rule 'fixed')")
            _want(eff_problem["regularizer"] == "identity",
                  f"{path}.problem.regularizer",
                  "fista supports only the identity regularizer")
        eff_solvers.append(eff)

    seeds = raw.get("seeds", [0])
    _want(isinstance(seeds, list) and len(seeds) > 0
          and all(isinstance(s, int) for s in seeds),
          f"{path}.seeds", "must be a non-empty list of integers")

    emit = raw.get("emit", {})
    _want(isinstance(emit, dict), f"{path}.emit", "must be an object")
    _check_keys(emit, _EMIT_KEYS, f"{path}.emit")
    eff_emit = {key: bool(emit.get(key, default))
                for key, default in _EMIT_KEYS.items()}

    output_dir = raw.get("output_dir", "out")
    _want(isinstance(output_dir, str) and output_dir, f"{path}.output_dir",
          "must be a non-empty string")

    return {
        "problem": eff_problem,
        "solvers": eff_solvers,
        "seeds": list(seeds),
        "output_dir": output_dir,
        "emit": eff_emit,
    }


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"{path}: cannot read config: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: invalid JSON: "
                          f"{err.msg}") from err
    return validate_config(raw)


def build_problem(problem_cfg, seed):
    kind = problem_cfg["kind"]
    if kind == "spectra_1d":
        prob = spectra_problem(n=int(problem_cfg["n"]),
                               nl=float(problem_cfg["nl"]), seed=seed)
        shape = (int(problem_cfg["n"]),)
    elif kind == "blur_2d":
        nx = int(problem_cfg["nx"])
        prob = blur2d_problem(nx=nx, nl=float(problem_cfg["nl"]), seed=seed,
                              psf_sigma=float(problem_cfg["psf_sigma"]),
                              boundary=problem_cfg["boundary"],
                              density=float(problem_cfg["density"]))
        shape = (nx, nx)
    else:
        nx = int(problem_cfg["nx"])
        nd = problem_cfg["n_detectors"]
        prob = ct_problem(nx=nx, n_angles=int(problem_cfg["n_angles"]),
                          n_detectors=None if nd is None else int(nd),
                          nl=float(problem_cfg["nl"]), seed=seed)
        shape = (nx, nx)
    if problem_cfg["regularizer"] == "identity":
        L = RegOperator.identity(prob.A.cols)
    else:
        L = RegOperator.first_difference(prob.A.cols)
    return prob, L, shape


def _solver_config(entry, nl, seed):
    return SolverConfig(
        method=entry["method"], p=float(entry["p"]),
        tau_smooth=entry["tau_smooth"], lambda_rule=entry["lambda_rule"],
        lambda_value=float(entry["lambda_value"]), tau_dp=float(entry["tau_dp"]),
        noise_level=float(nl), restart_tol=float(entry["restart_tol"]),
        max_basis_vectors=entry["max_basis_vectors"], kmax=int(entry["kmax"]),
        seed=seed, stop_x_tol=float(entry["stop_x_tol"]),
        corrected_seed=entry["corrected_seed"],
        fista_monotone=bool(entry["fista_monotone"]),
    )


def _atomic_write(path, data):
    tmp = path + ".tmp"
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode, newline="" if mode == "w" else None) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _fmt(value):
    if isinstance(value, float):
        if np.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def history_csv(history):
    lines = [",".join(CSV_COLUMNS)]
    for k in range(len(history)):
        lines.append(",".join([
            str(k + 1),
            _fmt(history.rel_error[k]),
            _fmt(history.residual_norm[k]),
            _fmt(history.lambdas[k]),
            str(history.subspace_dim[k]),
            str(int(history.restarted[k])),
            _fmt(history.functional_T[k]),
        ]))
    return "\n".join(lines) + "\n"


def write_raw_vector(path, x):
    """Little-endian float64 raw vector plus a JSON sidecar with the shape."""
    data = np.asarray(x, dtype="<f8").tobytes()
    _atomic_write(path, data)
    header = {"dtype": "<f8", "shape": [int(len(x))], "order": "F"}
    _atomic_write(path + ".json", json.dumps(header, sort_keys=True) + "\n")


def write_pgm16(path, x, shape):
    """16-bit PGM, min-max scaled; the scale is recorded in a sidecar."""
    image = np.asarray(x, dtype=float).reshape(shape, order="F")
    lo, hi = float(image.min()), float(image.max())
    scale = hi - lo if hi > lo else 1.0
    pix = np.round((image - lo) / scale * 65535.0).astype(">u2")
    header = f"P5\n{shape[1]} {shape[0]}\n65535\n".encode("ascii")
    _atomic_write(path, header + pix.tobytes())
    sidecar = {"min": lo, "max": hi, "maxval": 65535}
    _atomic_write(path + ".json", json.dumps(sidecar, sort_keys=True) + "\n")


def _gnuplot_script(labels):
    lines = [
        "# gnuplot script: relative error norm histories",
        "set logscale y",
        "set xlabel 'iteration'",
        "set ylabel 'relative error'",
        "set datafile separator ','",
        "set key outside",
    ]
    plots = [
        f"'{label}_history.csv' using 1:2 with lines title '{label}'"
        for label in labels
    ]
    lines.append("plot \\\n    " + ", \\\n    ".join(plots))
    return "\n".join(lines) + "\n"


def _run_one(entry, prob, L, seed):
    cfg = _solver_config(entry, prob.nl, seed)
    x_true = prob.x_true if prob.x_true is not None else None
    x, history = solve(cfg, prob.A, prob.b, L=L, x_true=x_true)
    return entry["label"], x, history


def run_experiment(config, jobs=1):
    """Run every (seed, solver) pair and write artifacts.

    Returns the summary rows.  Solver stagnation is recorded in the summary
    and is not an error.
    """
    out_root = config["output_dir"]
    os.makedirs(out_root, exist_ok=True)
    _atomic_write(os.path.join(out_root, "config_effective.json"),
                  json.dumps(config, sort_keys=True, indent=2) + "\n")

    summary = []
    for seed in config["seeds"]:
        prob, L, shape = build_problem(config["problem"], seed)
        seed_dir = os.path.join(out_root, f"seed{seed:02d}")
        os.makedirs(seed_dir, exist_ok=True)

        if jobs > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(
                    lambda entry: _run_one(entry, prob, L, seed),
                    config["solvers"]))
        else:
            results = [_run_one(entry, prob, L, seed)
                       for entry in config["solvers"]]

        for label, x, history in results:
            if config["emit"]["history_csv"]:
                _atomic_write(os.path.join(seed_dir, f"{label}_history.csv"),
                              history_csv(history))
            if config["emit"]["reconstruction_raw"]:
                write_raw_vector(
                    os.path.join(seed_dir, f"{label}_reconstruction.f64"), x)
            if config["emit"]["reconstruction_pgm"] and len(shape) == 2:
                write_pgm16(
                    os.path.join(seed_dir, f"{label}_reconstruction.pgm"),
                    x, shape)
            summary.append({
                "seed": seed,
                "label": label,
                "final_rel_error": history.rel_error[-1] if len(history) else float("nan"),
                "iterations": len(history),
                "restarts": history.restart_count,
                "peak_basis_columns": history.peak_basis_columns,
                "status": history.status,
            })
        if config["emit"]["history_csv"]:
            _atomic_write(os.path.join(seed_dir, "plot.gp"),
                          _gnuplot_script([e["label"] for e in config["solvers"]]))

    if config["emit"]["summary_table"]:
        cols = ("seed", "label", "final_rel_error", "iterations", "restarts",
                "peak_basis_columns", "status")
        lines = [",".join(cols)]
        for row in sorted(summary, key=lambda r: (r["seed"], r["label"])):
            lines.append(",".join(_fmt(row[c]) for c in cols))
        _atomic_write(os.path.join(out_root, "summary.csv"),
                      "\n".join(lines) + "\n")
    return summary


def _parse_seeds(text):
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part]


def _cmd_run(args):
    config = load_config(args.config)
    if args.out:
        config["output_dir"] = args.out
    env_out = os.environ.get("SOLVE_OUT_DIR")
    if env_out:
        config["output_dir"] = env_out
    if args.seeds:
        config["seeds"] = _parse_seeds(args.seeds)
    summary = run_experiment(config, jobs=max(1, args.jobs))
    stagnated = [row for row in summary if row["status"] == "stagnated"]
    print(f"wrote {config['output_dir']} "
          f"({len(summary)} runs, {len(stagnated)} stagnated)")
    return 0


def _cmd_validate(args):
    config = load_config(args.config)
    print(json.dumps(config, sort_keys=True, indent=2))
    return 0


def _cmd_problems_list(_args):
    for kind in PROBLEM_KINDS:
        defaults = ", ".join(f"{k}={v!r}" for k, v in _PROBLEM_KEYS[kind].items())
        print(f"{kind}: {defaults}")
    return 0


def main(argv=None):
    try:
        import threadpoolctl

        # Subproblems are small and dense; oversubscribed BLAS pools cost
        # more in synchronization than they gain.
        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass

    parser = argparse.ArgumentParser(
        prog="solve",
        description="Sparse-solution ill-posed problem experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seeds", default=None,
                       help="seed list '0,1,2' or range '0..9'")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="concurrent solver runs per seed")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a config and print the "
                                            "effective settings")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    p_prob = sub.add_parser("problems", help="problem registry")
    sub_prob = p_prob.add_subparsers(dest="subcommand", required=True)
    p_list = sub_prob.add_parser("list", help="list problem kinds and defaults")
    p_list.set_defaults(func=_cmd_problems_list)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # internal failure
        print(f"internal error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
