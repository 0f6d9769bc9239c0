"""
Representation learning baselines
"""
