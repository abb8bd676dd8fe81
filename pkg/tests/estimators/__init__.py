# estimators tests
