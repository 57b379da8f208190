"""Wake-vortex detection in Doppler-LiDAR scans.

Pipeline: synthesize or load scans -> sample/label/normalize point
clouds -> segment per point (reduced DGCNN or PointNet, trained with
hand-derived gradients) -> cluster class points to vortex detections ->
score recall and mean error -> explain predictions by perturbing vortex
core regions (mask / move / swap).
"""

__version__ = "0.1.0"
