# rng tests
