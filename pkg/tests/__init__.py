"""
DSAM Test Suite

Tests covering:
- Rigid-body model, integrators and the push rig
- Inner loop, policy runtime and weight files
- Environment, PPO and training runs
- Benchmark harness, reports and the command line
"""
