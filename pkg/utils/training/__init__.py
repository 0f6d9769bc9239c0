"""
Training loop of the agent

Buffers, reward normalization, update scheduling, collection, evaluation,
checkpoints and the metrics file.
"""
