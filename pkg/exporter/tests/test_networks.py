import pytest
import torch

from a2lp_exporter.networks import (
    FEATURE_DIMS,
    ShapeMismatchError,
    build_backbone,
    load_checkpoint,
)


@pytest.mark.parametrize("name", ["resnet12", "wrn-28-10"])
def test_feature_width(name):
    model = build_backbone(name).eval()
    with torch.no_grad():
        out = model(torch.randn(2, 3, 32, 32))
    assert out.shape == (2, FEATURE_DIMS[name])


def test_unknown_backbone():
    with pytest.raises(ValueError, match="unknown backbone"):
        build_backbone("resnet50")


def test_eval_mode_is_deterministic():
    torch.manual_seed(0)
    model = build_backbone("resnet12").eval()
    batch = torch.randn(3, 3, 32, 32)
    with torch.no_grad():
        first = model(batch)
        second = model(batch)
    assert torch.equal(first, second)


def test_checkpoint_roundtrip_with_wrappers(tmp_path):
    torch.manual_seed(1)
    source = build_backbone("resnet12")
    # common checkpoint shape: nested dict, DataParallel prefixes, extra head
    state = {"module." + k: v for k, v in source.state_dict().items()}
    state["module.classifier.weight"] = torch.randn(64, 640)
    path = tmp_path / "ckpt.pth"
    torch.save({"state_dict": state, "epoch": 90}, path)

    target = build_backbone("resnet12")
    load_checkpoint(target, str(path), "resnet12")
    for key, value in source.state_dict().items():
        assert torch.equal(target.state_dict()[key], value)


def test_wrong_architecture_names_expected_width(tmp_path):
    torch.manual_seed(2)
    wrn = build_backbone("wrn-28-10")
    path = tmp_path / "wrn.pth"
    torch.save(wrn.state_dict(), path)
    resnet = build_backbone("resnet12")
    with pytest.raises(ShapeMismatchError, match="wrong architecture|feature width 640"):
        load_checkpoint(resnet, str(path), "resnet12")


def test_truncated_checkpoint_rejected(tmp_path):
    torch.manual_seed(3)
    model = build_backbone("resnet12")
    state = dict(list(model.state_dict().items())[:5])
    path = tmp_path / "partial.pth"
    torch.save(state, path)
    with pytest.raises(ShapeMismatchError, match="missing"):
        load_checkpoint(build_backbone("resnet12"), str(path), "resnet12")
