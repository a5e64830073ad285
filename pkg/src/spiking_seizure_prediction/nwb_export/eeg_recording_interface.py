"""Primary class for converting raw EEG stored as EDF."""
from typing import Optional

from pydantic import FilePath
from pynwb.ecephys import ElectricalSeries
from pynwb.file import NWBFile

from neuroconv.basedatainterface import BaseDataInterface
from neuroconv.utils import get_base_schema

from ..eeg_data import read_edf

MICROVOLTS_TO_VOLTS = 1e-6


class EegRecordingInterface(BaseDataInterface):
    """EDF recording interface: one electrode per EEG channel and an ElectricalSeries in acquisition."""

    keywords = ("eeg", "electrophysiology")

    def __init__(self, file_path: FilePath, recording_id: Optional[str] = None):
        super().__init__(file_path=file_path, recording_id=recording_id)

    def get_metadata_schema(self):
        metadata_schema = super().get_metadata_schema()
        metadata_schema["properties"]["Ecephys"] = get_base_schema(tag="Ecephys")
        metadata_schema["properties"]["Ecephys"]["properties"]["Device"] = {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "description": {"type": "string"},
                    "manufacturer": {"type": "string"},
                },
                "required": ["name"],
            },
        }
        metadata_schema["properties"]["Ecephys"]["properties"]["ElectrodeGroup"] = {
            "type": "object",
            "properties": {
                "name": {"type": "string"},
                "description": {"type": "string"},
                "location": {"type": "string"},
                "device": {"type": "string"},
            },
            "required": ["name", "description", "location", "device"],
        }
        metadata_schema["properties"]["Ecephys"]["properties"]["ElectricalSeries"] = {
            "type": "object",
            "properties": {
                "name": {"type": "string"},
                "description": {"type": "string"},
            },
            "required": ["name", "description"],
        }
        return metadata_schema

    def add_to_nwbfile(self, nwbfile: NWBFile, metadata: dict, stub_test: bool = False):
        recording = read_edf(self.source_data["file_path"], recording_id=self.source_data["recording_id"])
        ecephys_metadata = metadata["Ecephys"]
        for device_metadata in ecephys_metadata["Device"]:
            if device_metadata["name"] not in nwbfile.devices:
                nwbfile.create_device(**device_metadata)
        group_metadata = ecephys_metadata["ElectrodeGroup"]
        electrode_group = nwbfile.create_electrode_group(
            name=group_metadata["name"],
            description=group_metadata["description"],
            location=group_metadata["location"],
            device=nwbfile.devices[group_metadata["device"]],
        )
        nwbfile.add_electrode_column(name="channel_name", description="Channel label in the source recording")
        for channel_name in recording.channel_names:
            nwbfile.add_electrode(group=electrode_group, location=group_metadata["location"], channel_name=channel_name)
        electrodes = nwbfile.create_electrode_table_region(
            region=list(range(recording.channels)),
            description="EEG channels",
        )

        data = recording.samples.T
        if stub_test:
            data = data[: int(recording.sample_rate) * 10]
        series_metadata = ecephys_metadata["ElectricalSeries"]
        electrical_series = ElectricalSeries(
            name=series_metadata["name"],
            description=series_metadata["description"],
            data=data.astype("float32"),
            electrodes=electrodes,
            starting_time=0.0,
            rate=float(recording.sample_rate),
            conversion=MICROVOLTS_TO_VOLTS,
        )
        nwbfile.add_acquisition(electrical_series)
