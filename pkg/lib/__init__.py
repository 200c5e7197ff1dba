# ConvBound Library
