import matplotlib
import numpy as np

from rescale.plotting import FigureSpec, render, render_all


def _spec(**kw):
    t = np.linspace(0, 10, 50)
    return FigureSpec("fig", t, (("a", np.exp(-t)), ("b", np.cos(t))), **kw)


def test_render_writes_png(tmp_path):
    p = render(_spec(ylabel="y", title="demo"), tmp_path)
    assert p.name == "fig.png"
    assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_render_is_deterministic_and_metadata_free(tmp_path):
    a = render(_spec(logy=True), tmp_path / "a").read_bytes()
    b = render(_spec(logy=True), tmp_path / "b").read_bytes()
    assert a == b
    assert b"Software" not in a and b"matplotlib" not in a


def test_backend_untouched(tmp_path):
    before = matplotlib.get_backend()
    render_all([_spec(logx=True), FigureSpec("one", [1, 2, 3], (("x", [1, 2, 3]),), style="o")], tmp_path)
    assert matplotlib.get_backend() == before
    assert sorted(p.name for p in tmp_path.iterdir()) == ["fig.png", "one.png"]
