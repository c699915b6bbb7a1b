"""
Scripts Package for dllm_agent_lab

Contains the runnable entry point and its stages:
- lab.py: gen-data, train, run, analyze and report subcommands
- stages.py: one pipeline stage per subcommand
"""
