"""
Agent Package for dllm_agent_lab

This package contains:
- actions.py: Structured actions, canonical serializer and delimiter parser
- tools.py: Deterministic simulated tools and the per-episode file store
- history.py: Serialized workflow history
- policies.py: Model-backed, scripted and gold-replay policies
- runtime.py: Budgeted think-act-observe loop and episode records
"""
