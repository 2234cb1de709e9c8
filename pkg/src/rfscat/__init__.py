"""2D RF imaging forward solver (EFIE method of moments) and dataset factory."""

from .datagen import (
    DatasetConfig,
    DatasetRecord,
    ReceiverArray,
    add_awgn,
    generate,
    place_receivers,
    read_dataset,
)
from .emcore import (
    BasisLayout,
    CurrentSolution,
    ForwardOperator,
    PhysicsConstants,
    TransmitterConfig,
    assemble,
    cell_integral,
    greens,
    incident_field,
    received_vector,
    render_field_grid,
    solve_currents,
    total_field,
)
from .geometry import (
    DoiConfig,
    ImageRaster,
    Scene,
    ShapePrimitive,
    build_scene,
    load_mnist_idx,
    rasterize,
    sample_shape,
    scene_from_mnist,
    scene_random_shapes,
)

__version__ = "0.1.0"
