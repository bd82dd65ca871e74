"""Scenario runner, adversary scripts and benchmark workloads."""
