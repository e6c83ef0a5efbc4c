# lddgan test suite
