"""Recognition of star- and spiral-shaped polygons and unfolding motions for
restricted folded states of a sheet (1D flat, 2D flat, polygonal 3D)."""

__version__ = "0.1.0"
