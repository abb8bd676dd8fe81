# path simulator tests
