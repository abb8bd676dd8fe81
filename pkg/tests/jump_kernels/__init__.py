# jump kernels tests
