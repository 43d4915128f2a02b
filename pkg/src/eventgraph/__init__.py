"""Event-graph reasoning over typed-triple delta logs.

Modules: substrate (delta log, replay, fork), events (ancestor traversal),
counterfactual (removal answers), kinematics (collision prediction),
program and clevrer (question execution and grading), village (twin-log
benchmark), stats, oracle (disc simulator), cli.
"""

__version__ = "0.1.0"
