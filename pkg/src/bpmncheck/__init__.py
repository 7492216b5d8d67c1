"""BPMN verification toolkit."""
