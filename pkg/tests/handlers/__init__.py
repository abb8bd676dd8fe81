# handlers tests
