# quadrature tests
