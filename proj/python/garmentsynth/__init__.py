try:
    from . import _core
except ImportError:
    import _core

Error = _core.Error
default_config = _core.default_config
parse = _core.parse
render = _core.render
infer_scene = _core.infer_scene
sim_full = _core.sim_full
synth = _core.synth
manipulate = _core.manipulate
run_suite = _core.run_suite

__all__ = [
    "Error",
    "default_config",
    "parse",
    "render",
    "infer_scene",
    "sim_full",
    "synth",
    "manipulate",
    "run_suite",
]
