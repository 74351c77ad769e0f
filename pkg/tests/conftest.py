import threadpoolctl

# Small dense kernels throughout; BLAS pool synchronization on little
# matrices dominates otherwise.
threadpoolctl.threadpool_limits(1)
