"""On-disk documents: weights, quantized weights, reports, trajectories, scenarios."""
