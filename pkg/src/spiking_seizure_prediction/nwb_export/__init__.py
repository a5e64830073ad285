from .eeg_recording_interface import EegRecordingInterface
from .interval_plan_interface import IntervalPlanInterface
from .seizure_events_interface import SeizureEventsInterface
from .eeg_nwbconverter import EegNWBConverter
from .convert_recording import recording_to_nwb
