"""Single-image defocus blur estimation and map-driven applications.

Pipeline: classify 32x32 patches into 20 Gaussian blur levels, average
overlapping patch predictions into a dense per-pixel blur map, refine
the map with a weighted guided filter steered by a texture-suppressed
guidance image, then drive adaptive sharpening, shallow depth-of-field
synthesis, or multi-focus fusion from the refined map.
"""

__version__ = "0.1.0"
