"""
Numerical certificates for the estimator inequalities
=====================================================

Each check compares a Monte Carlo or brute-force quantity to its bound
and reports the slack it used (three standard errors for sampled
quantities).  The same suite runs from the command line as ``zospa check``.
"""

from zospa.theory_checks import run_checks, summary

reports = run_checks(["aq_bound", "second_moment", "estimator_bias", "squared_sum"])
print(summary(reports))
