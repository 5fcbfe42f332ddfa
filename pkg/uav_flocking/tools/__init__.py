# CSV and SVG artefacts
