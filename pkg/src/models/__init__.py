# Models - Typed Records, Labels & Categories
