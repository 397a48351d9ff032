"""Prophet inequalities with linear cancellation (buyback) costs.

Library + CLI for computing the optimal competitive ratio as a function of
the buyback factor f, building the matching worst-case instances, and
benchmarking online policies.
"""

__version__ = "0.1.0"
