"""Config-driven verification harness and command line interface."""
