"""
Diffusion Package for dllm_agent_lab

Everything that touches the backbone:
- corruption.py: noise levels and context-clean masking of action spans
- masks.py: causal, span-aware, block-decode and naive block attention masks
- model.py: the tiny masked-attention transformer and checkpoints
- training.py: L_MDM, L_AR, the combined objective and the training loop
- decoding.py: confidence-gated block denoising and greedy AR decoding
"""
