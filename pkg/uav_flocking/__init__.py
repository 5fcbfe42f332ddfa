# uav_flocking - decentralized leader-follower flocking for fixed-wing UAVs
