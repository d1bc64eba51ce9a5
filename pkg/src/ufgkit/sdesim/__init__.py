"""Monte Carlo simulation of the Stratonovich SDE and numerical decay checks."""
