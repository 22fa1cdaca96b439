# Plate/fluid splitting simulator package
