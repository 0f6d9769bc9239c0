"""
Multi-view masked autoencoder
"""
