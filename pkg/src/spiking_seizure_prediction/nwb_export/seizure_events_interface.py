"""Primary class for converting seizure annotations."""
import numpy as np
from ndx_events import Events
from pydantic import FilePath
from pynwb.file import NWBFile

from neuroconv.basedatainterface import BaseDataInterface
from neuroconv.tools import nwb_helpers
from neuroconv.utils import get_base_schema

from ..eeg_data import read_annotations_csv


class SeizureEventsInterface(BaseDataInterface):
    """Seizure onsets and offsets as ndx-events Events in a processing module."""

    keywords = ("seizure", "events")

    def __init__(self, annotations_file_path: FilePath):
        super().__init__(annotations_file_path=annotations_file_path)

    def get_metadata_schema(self):
        metadata_schema = super().get_metadata_schema()
        metadata_schema["properties"]["Seizures"] = get_base_schema(tag="Seizures")
        metadata_schema["properties"]["Seizures"]["properties"]["Module"] = {
            "properties": {
                "name": {"type": "string"},
                "description": {"type": "string"},
            },
        }
        metadata_schema["properties"]["Seizures"]["properties"]["Events"] = {
            "type": "array",
            "minItems": 2,
            "maxItems": 2,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "description": {"type": "string"},
                },
            },
        }
        return metadata_schema

    def add_to_nwbfile(self, nwbfile: NWBFile, metadata: dict):
        annotations = read_annotations_csv(self.source_data["annotations_file_path"])
        if not len(annotations):
            return
        seizures_module = nwb_helpers.get_module(
            nwbfile=nwbfile,
            name=metadata["Seizures"]["Module"]["name"],
            description=metadata["Seizures"]["Module"]["description"],
        )
        onset_metadata, offset_metadata = metadata["Seizures"]["Events"]
        for event_metadata, times in ((onset_metadata, annotations.onsets), (offset_metadata, annotations.offsets)):
            events = Events(
                name=event_metadata["name"],
                description=event_metadata["description"],
                timestamps=np.asarray(times, dtype="float64"),
            )
            seizures_module.add(events)
