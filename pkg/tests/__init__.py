# this file makes the tests directory a python package
