"""Convert one EDF recording with its seizure annotations to NWB using the NWBConverter."""
from datetime import datetime
from pathlib import Path
from typing import Optional
from zoneinfo import ZoneInfo

from neuroconv.utils import dict_deep_update, load_dict_from_file

from ..eeg_data import IntervalParams, read_annotations_csv
from ..tools.edf import read_edf_file
from ..utils.errors import FormatError
from .eeg_nwbconverter import EegNWBConverter

DEFAULT_START_TIME = datetime(2000, 1, 1)


def get_session_start_time(start_date: str, start_time: str) -> datetime:
    """Session start from the EDF ``dd.mm.yy`` / ``hh.mm.ss`` header fields (UTC).

    Anonymised files often blank these fields; a fixed placeholder is used then.
    """
    try:
        start = datetime.strptime(f"{start_date} {start_time}", "%d.%m.%y %H.%M.%S")
    except ValueError:
        start = DEFAULT_START_TIME
    return start.replace(tzinfo=ZoneInfo("UTC"))


def recording_to_nwb(
    edf_file_path: str | Path,
    annotations_file_path: str | Path,
    nwbfile_path: str | Path,
    params: Optional[IntervalParams] = None,
    subject_id: Optional[str] = None,
    metadata_file_path: Optional[str | Path] = None,
    stub_test: bool = False,
):
    """Write the EEG, the interval plan and the seizure events of one recording to an NWB file.

    Parameters
    ----------
    edf_file_path : str | Path
        Continuous EDF recording.
    annotations_file_path : str | Path
        ``onset_s,offset_s`` seizure annotations.
    nwbfile_path : str | Path
        Output file; overwritten when it exists.
    params : IntervalParams, optional
        PIL, SPH and lead-seizure gap used to derive the interval plan.
    subject_id : str, optional
        Overrides the subject id of the metadata.
    metadata_file_path : str | Path, optional
        User YAML deep-merged over the bundled editable metadata.
    stub_test : bool, default: False
        Write only the first 10 s of EEG.
    """
    edf_file_path = Path(edf_file_path)
    annotations_file_path = Path(annotations_file_path)
    for file_path in (edf_file_path, annotations_file_path):
        if not file_path.is_file():
            raise FileNotFoundError(f"No such file: {file_path}")
    params = params if params is not None else IntervalParams()
    contents = read_edf_file(edf_file_path)
    duration_s = contents.signals.shape[1] / contents.sample_rate
    annotations = read_annotations_csv(annotations_file_path)
    if annotations.seizures and annotations.seizures[-1][1] > duration_s:
        raise FormatError(f"Annotations extend beyond the {duration_s} s recording in {edf_file_path}")

    source_data = dict(
        Recording=dict(file_path=edf_file_path, recording_id=edf_file_path.stem),
        Intervals=dict(
            annotations_file_path=annotations_file_path,
            duration_s=duration_s,
            pil_s=params.pil_s,
            sph_s=params.sph_s,
            lead_gap_s=params.lead_gap_s,
        ),
        Seizures=dict(annotations_file_path=annotations_file_path),
    )
    conversion_options = dict(Recording=dict(stub_test=stub_test), Intervals=dict(), Seizures=dict())

    converter = EegNWBConverter(source_data=source_data)
    metadata = converter.get_metadata()
    metadata["NWBFile"]["session_start_time"] = get_session_start_time(contents.start_date, contents.start_time)
    metadata["NWBFile"]["session_id"] = edf_file_path.stem

    # Update default metadata with the editable in the corresponding yaml file
    editable_metadata_path = Path(__file__).parent / "eeg_metadata.yaml"
    editable_metadata = load_dict_from_file(editable_metadata_path)
    metadata = dict_deep_update(metadata, editable_metadata)
    if metadata_file_path is not None:
        metadata = dict_deep_update(metadata, load_dict_from_file(Path(metadata_file_path)))
    if subject_id is not None:
        metadata["Subject"]["subject_id"] = subject_id

    Path(nwbfile_path).parent.mkdir(parents=True, exist_ok=True)
    converter.run_conversion(
        metadata=metadata, nwbfile_path=nwbfile_path, conversion_options=conversion_options, overwrite=True
    )
