# Tests for the ranklab command line
