"""Primary class for converting the preictal/interictal interval plan into NWB epochs."""
from pydantic import FilePath
from pynwb.file import NWBFile

from neuroconv.basedatainterface import BaseDataInterface

from ..eeg_data import IntervalParams, label_intervals, read_annotations_csv


class IntervalPlanInterface(BaseDataInterface):
    """Epoch interface: one epoch per labelled interval, with its state in a ``state`` column."""

    keywords = ("epochs", "seizure prediction")

    def __init__(
        self,
        annotations_file_path: FilePath,
        duration_s: float,
        pil_s: float = 1800.0,
        sph_s: float = 300.0,
        lead_gap_s: float = 14400.0,
    ):
        super().__init__(
            annotations_file_path=annotations_file_path,
            duration_s=duration_s,
            pil_s=pil_s,
            sph_s=sph_s,
            lead_gap_s=lead_gap_s,
        )

    def get_metadata_schema(self):
        metadata_schema = super().get_metadata_schema()
        metadata_schema["properties"]["Intervals"] = {
            "type": "object",
            "properties": {"description": {"type": "string"}},
            "required": ["description"],
        }
        return metadata_schema

    def add_to_nwbfile(self, nwbfile: NWBFile, metadata: dict):
        annotations = read_annotations_csv(self.source_data["annotations_file_path"])
        params = IntervalParams(
            pil_s=self.source_data["pil_s"], sph_s=self.source_data["sph_s"], lead_gap_s=self.source_data["lead_gap_s"]
        )
        plan = label_intervals(annotations, self.source_data["duration_s"], params)
        nwbfile.add_epoch_column(name="state", description=metadata["Intervals"]["description"])
        for start_time, stop_time, state in plan.rows():
            nwbfile.add_epoch(start_time=start_time, stop_time=stop_time, state=state)
