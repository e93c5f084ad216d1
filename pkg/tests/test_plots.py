from geopfn.plots import profile_figure, rmse_bars_figure


def test_profile_figure_writes_svg(tmp_path):
    path = tmp_path / "profile.svg"
    out = profile_figure(path,
                         pred_depths=[3.0, 1.0, 2.0],
                         means=[22.0, 20.0, 21.0],
                         q025=[18.0, 16.0, 17.0],
                         q975=[26.0, 24.0, 25.0],
                         obs_depths=[1.5, 2.5],
                         obs_values=[20.5, 21.5],
                         title="BH001", xlabel="su")
    assert out == str(path)
    text = path.read_text()
    assert text.lstrip().startswith("<?xml")
    assert "depth (m)" in text


def test_rmse_bars_figure_writes_svg(tmp_path):
    path = tmp_path / "bars.svg"
    out = rmse_bars_figure(path, ["BH1", "BH2"],
                           {"pfn": [1.0, 2.0], "hbm": [1.5, 1.8]})
    assert out == str(path)
    assert path.read_text().lstrip().startswith("<?xml")
