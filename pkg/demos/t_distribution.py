"""
Student-t tails without scipy
=============================

The paired t-test uses a continued-fraction incomplete beta.  With one
degree of freedom the t distribution is Cauchy, so there is a closed form
to compare against.
"""

import math

import numpy as np

from gape import paired_t_test
from gape.stats import student_t_two_tailed

for t in (0.5, 1.0, 3.0, 10.0):
    print(t, student_t_two_tailed(t, 1), 1 - 2 * math.atan(t) / math.pi)

# the tail thins toward the normal as dof grows
for dof in (1, 4, 30, 299):
    print(dof, student_t_two_tailed(1.96, dof))

rng = np.random.default_rng(0)
a = rng.normal(0.01, 0.05, 120)
b = rng.normal(0.00, 0.05, 120)
print(paired_t_test(a, b))
