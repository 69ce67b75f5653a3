"""
Parameter accounting per component
"""
from layers.language_model import LanguageModel, output_dims
from layers.output_layers import param_count
from models.reports import ParamRow


def param_report(model: LanguageModel) -> list[ParamRow]:
    """Enumerated sizes for embedding, encoder and output layer, then the total"""
    rows = [ParamRow(component, sum(p.size for p in params))
            for component, params in model.parameter_groups().items()]
    rows.append(ParamRow("total", sum(row.count for row in rows)))
    return rows


def closed_form_output_params(model: LanguageModel) -> int:
    dims = output_dims(model)
    return param_count(model.output_config.kind, dims.vocab_size, dims.d, dims.d_h,
                       dims.d_j, dims.k)
