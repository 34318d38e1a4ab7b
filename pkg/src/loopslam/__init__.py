"""loopslam: loop-closure SLAM back-end with a deterministic simulator.

Submodules:
  geom       rotation/pose algebra, Z-Y-X Euler conventions
  imgproc    PGM IO, FAST corners, BRIEF descriptors
  retrieval  binary bag-of-words vocabulary + inverted-index database
  verify     descriptor matching and two-step RANSAC loop verification
  reloc      sliding-window relocalization against a fixed loop frame
  posegraph  4-DOF pose graph, merging, downsampling, map persistence
  sim        deterministic world/trajectory/drift generator
  evaluate   trajectory alignment and ATE
  cli        command-line pipeline driver
"""

__version__ = "0.1.0"
