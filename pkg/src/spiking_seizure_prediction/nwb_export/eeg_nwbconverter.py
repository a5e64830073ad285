"""Primary NWBConverter class for EEG recordings with seizure annotations."""
from neuroconv import NWBConverter

from .eeg_recording_interface import EegRecordingInterface
from .interval_plan_interface import IntervalPlanInterface
from .seizure_events_interface import SeizureEventsInterface


class EegNWBConverter(NWBConverter):
    """Raw EEG, its preictal/interictal interval plan and the seizure events of one recording."""

    data_interface_classes = dict(
        Recording=EegRecordingInterface,
        Intervals=IntervalPlanInterface,
        Seizures=SeizureEventsInterface,
    )
