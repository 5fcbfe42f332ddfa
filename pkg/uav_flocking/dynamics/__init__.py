"""Fixed-wing UAV kinematics."""
