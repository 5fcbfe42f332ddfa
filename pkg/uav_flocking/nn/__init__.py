# Numpy layers, optimizer and the actor / critic networks
