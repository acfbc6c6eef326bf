# Tests for test functions, rank timelines and the differential inequality
