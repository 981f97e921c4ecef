import warnings

# numba's threading-layer probe warns about the sandbox TBB version; the
# fallback layer is fine and the warning is noise in test output.
warnings.filterwarnings("ignore", message="The TBB threading layer")
