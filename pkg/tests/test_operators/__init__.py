# Tests for the operator catalog and the structure-condition checks
