import pytest

from labelpipe.corpus import LabeledSample, TaskSpec, TextSample


def make_samples(labels, prefix="s"):
    """Tiny corpus where sample i's text mentions its index."""
    return [
        LabeledSample(sample=TextSample(id=f"{prefix}{i:04d}",
                                        text=f"text number {i}"),
                      gold=label)
        for i, label in enumerate(labels)
    ]


@pytest.fixture
def binary_task():
    return TaskSpec(task_id="demo", positive_label="yes", negative_label="no")
