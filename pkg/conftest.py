# Puts the repository root on sys.path so `import spikekit` works without installing.
