"""NLL training loop, optimizers, and checkpoints"""
