"""cashlab: capability-conditioned hypernetwork policies for heterogeneous
multi-robot teams, with QMIX / MAPPO / DAgger trainers and an evaluation
harness for success rate, makespan, parameter efficiency, and behavioral
diversity."""

__version__ = "0.1.0"
