"""
World Package for dllm_agent_lab

This package contains:
- vocab.py: Token vocabulary and symbol groups
- generator.py: Deterministic synthetic world and task sampling
- trajectories.py: Gold trajectories, span layouts and training examples

Modules are imported directly (``from world.generator import ...``) because
trajectories depends on the agent package's parser and tools.
"""
