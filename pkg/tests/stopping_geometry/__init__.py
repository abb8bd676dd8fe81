# stopping geometry tests
