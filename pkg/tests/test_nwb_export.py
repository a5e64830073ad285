from datetime import datetime
from zoneinfo import ZoneInfo

import ndx_events  # noqa: F401
import numpy as np
import pytest
from pynwb import NWBHDF5IO

from spiking_seizure_prediction.cli import main
from spiking_seizure_prediction.eeg_data import (
    EegRecording,
    IntervalParams,
    SeizureAnnotations,
    write_annotations_csv,
    write_edf,
)
from spiking_seizure_prediction.nwb_export import (
    EegRecordingInterface,
    IntervalPlanInterface,
    SeizureEventsInterface,
    recording_to_nwb,
)

PARAMS = IntervalParams(pil_s=120.0, sph_s=30.0, lead_gap_s=100.0)


@pytest.fixture
def recording_files(tmp_path, rng):
    recording = EegRecording(20.0 * rng.normal(size=(2, 64 * 600)), sample_rate=64.0, channel_names=["F7-T7", "T7-P7"])
    edf_path = tmp_path / "patient01.edf"
    annotations_path = tmp_path / "patient01_annotations.csv"
    write_edf(recording, edf_path)
    write_annotations_csv(SeizureAnnotations(((500.0, 520.0),)), annotations_path)
    return edf_path, annotations_path


def test_recording_to_nwb(tmp_path, recording_files):
    edf_path, annotations_path = recording_files
    nwbfile_path = tmp_path / "patient01.nwb"
    recording_to_nwb(edf_path, annotations_path, nwbfile_path, params=PARAMS, subject_id="chb01")

    with NWBHDF5IO(nwbfile_path, mode="r", load_namespaces=True) as io:
        nwbfile = io.read()
        series = nwbfile.acquisition["ElectricalSeriesEEG"]
        assert series.data.shape == (64 * 600, 2)
        assert series.rate == 64.0
        assert series.conversion == pytest.approx(1e-6)
        assert list(nwbfile.electrodes["channel_name"][:]) == ["F7-T7", "T7-P7"]

        epochs = nwbfile.epochs.to_dataframe()
        assert epochs["state"].tolist() == ["interictal", "preictal", "excluded"]
        np.testing.assert_allclose(epochs["start_time"], [0.0, 350.0, 470.0])
        np.testing.assert_allclose(epochs["stop_time"], [350.0, 470.0, 600.0])

        seizures = nwbfile.processing["seizures"]
        np.testing.assert_array_equal(seizures["seizure_onsets"].timestamps[:], [500.0])
        np.testing.assert_array_equal(seizures["seizure_offsets"].timestamps[:], [520.0])

        assert nwbfile.subject.subject_id == "chb01"
        assert nwbfile.session_id == "patient01"
        assert nwbfile.session_start_time == datetime(2000, 1, 1, tzinfo=ZoneInfo("UTC"))


def test_stub_conversion_keeps_ten_seconds(tmp_path, recording_files):
    edf_path, annotations_path = recording_files
    nwbfile_path = tmp_path / "stub.nwb"
    recording_to_nwb(edf_path, annotations_path, nwbfile_path, params=PARAMS, stub_test=True)
    with NWBHDF5IO(nwbfile_path, mode="r", load_namespaces=True) as io:
        assert io.read().acquisition["ElectricalSeriesEEG"].data.shape == (640, 2)


def test_missing_recording(tmp_path, recording_files):
    _, annotations_path = recording_files
    with pytest.raises(FileNotFoundError):
        recording_to_nwb(tmp_path / "missing.edf", annotations_path, tmp_path / "out.nwb")


def test_export_command(tmp_path, recording_files):
    edf_path, annotations_path = recording_files
    nwbfile_path = tmp_path / "cli.nwb"
    argv = ["export-nwb", "--edf", str(edf_path), "--annotations", str(annotations_path), "--output", str(nwbfile_path)]
    argv += ["--pil-s", "120", "--sph-s", "30", "--lead-gap-s", "100", "--stub-test"]
    assert main(argv) == 0
    assert nwbfile_path.is_file()


@pytest.mark.parametrize(
    "interface, keyword",
    [(EegRecordingInterface, "eeg"), (IntervalPlanInterface, "epochs"), (SeizureEventsInterface, "seizure")],
)
def test_interface_keywords(interface, keyword):
    assert keyword in interface.keywords
    assert "behavior" not in interface.keywords
