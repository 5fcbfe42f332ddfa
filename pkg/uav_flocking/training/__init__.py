# Replay memory, parameter-shared actor-critic training and checkpoints
