# operator model tests
