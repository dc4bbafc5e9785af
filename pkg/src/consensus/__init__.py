# consensus package