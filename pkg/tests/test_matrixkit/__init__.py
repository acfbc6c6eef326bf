# Tests for the spacetime Hessian toolkit
