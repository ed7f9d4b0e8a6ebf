"""Hard-attention recurrent visual odometry: glimpse-based 6-DoF pose
regression from monocular frame pairs, with the glimpse-location policy
trained by policy gradients (REINFORCE or clipped-surrogate refinement)."""

__version__ = "0.1.0"
