"""X-ray ghost imaging and ghost tomography simulation and reconstruction."""
