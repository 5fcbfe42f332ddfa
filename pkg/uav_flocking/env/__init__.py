"""Flocking MDP: joint states, actions, rewards, leader and episode lifecycle."""
