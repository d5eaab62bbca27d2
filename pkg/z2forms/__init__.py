from z2forms.hodge import uniform_weights, combinatorial_weights, cotan_weights

weights_class = {
    "uniform": uniform_weights,
    "combinatorial": combinatorial_weights,
    "cotan": cotan_weights,
    "circumcentric": cotan_weights,
}
