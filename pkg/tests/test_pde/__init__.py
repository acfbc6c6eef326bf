# Tests for grids, closed forms and the explicit solver
