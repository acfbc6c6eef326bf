# Tests for elementary symmetric functions
