# Metrics, frozen-policy rollouts and embedding comparisons
