"""
Record schema for the synthetic multimodal dataset.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Record(BaseModel):
    """One sample: a grayscale grid and/or a token list plus the class label."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    id: str = Field(..., min_length=1, description="Record identifier")
    label: int = Field(..., ge=0, description="Class index")
    image: Optional[List[float]] = Field(None, description="Row-major grid, values in [0, 1]")
    text: Optional[List[int]] = Field(None, description="Token ids")
    has_image: bool = Field(..., description="Image present")
    has_text: bool = Field(..., description="Text present")

    @field_validator("image")
    @classmethod
    def validate_image(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        """Pixel intensities live in [0, 1]."""
        if v is not None and any(not 0.0 <= x <= 1.0 for x in v):
            raise ValueError("image values must lie in [0, 1]")
        return v

    @field_validator("text")
    @classmethod
    def validate_text(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is not None and len(v) == 0:
            raise ValueError("text must contain at least one token")
        if v is not None and any(t < 0 for t in v):
            raise ValueError("token ids must be non-negative")
        return v

    @model_validator(mode="after")
    def validate_presence(self) -> "Record":
        if self.has_image != (self.image is not None):
            raise ValueError(
                f"has_image={self.has_image} disagrees with the image field"
            )
        if self.has_text != (self.text is not None):
            raise ValueError(
                f"has_text={self.has_text} disagrees with the text field"
            )
        if not (self.has_image or self.has_text):
            raise ValueError("at least one modality must be present")
        return self
